# -*- coding: utf-8 -*-
"""General file system utilities: hashing and atomic writes."""

import hashlib
import os
from contextlib import contextmanager
from typing import Iterator

from sdlab.utils.constants import PARTIAL_SUFFIX

_HASH_CHUNK_BYTES = 1 << 20


def sha256_file(file_path: str) -> str:
    """Returns the hex SHA-256 digest of a file, read in 1 MiB chunks."""
    digest = hashlib.sha256()
    with open(file_path, 'rb') as f:
        for chunk in iter(lambda: f.read(_HASH_CHUNK_BYTES), b''):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


@contextmanager
def atomic_output(final_path: str) -> Iterator[str]:
    """
    Yields a '<final_path>.partial' path to write to, renamed onto final_path
    only when the block completes. On failure the .partial file is left in
    place and final_path is untouched.
    """
    directory = os.path.dirname(final_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    partial_path = final_path + PARTIAL_SUFFIX
    yield partial_path
    os.replace(partial_path, final_path)


def write_text_atomic(final_path: str, text: str) -> None:
    with atomic_output(final_path) as partial_path:
        with open(partial_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
