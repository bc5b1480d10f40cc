from __future__ import annotations

import random

import pytest

from chains import f1_store, random_store, write_store


@pytest.fixture(scope="session")
def f1():
    return f1_store()


@pytest.fixture()
def f1_files(tmp_path, f1):
    return write_store(f1, tmp_path)


@pytest.fixture()
def small_random_store():
    return random_store(random.Random(42), 400)
