# Copyright (c) 2020 The tripletqmc authors
# All rights reserved.
#
#   Redistribution and use in source and binary forms, with or
#   without modification, are permitted provided that the following
#   conditions are met:
#
#    1. Redistributions of source code must retain the above copyright
#       notice, this list of conditions and the following disclaimer.
#    2. Redistributions in binary form must reproduce the above
#       copyright notice, this list of conditions and the following
#       disclaimer in the documentation and/or other materials provided
#       with the distribution.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS
# FOR A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE
# COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT,
# INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING,
# BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES;
# LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT
# LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN
# ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE
# POSSIBILITY OF SUCH DAMAGE.

"""Various utility functions.

This module contains hashing and bit manipulation helpers used throughout the
rest of the project.
"""

from binascii import b2a_hex
from cryptography.hazmat.backends import default_backend
from cryptography.hazmat.primitives import hashes
import numpy as np

__all__ = [
    'sha256',
    'bytes2int',
    'int2bytes',
    'derive_seed',
    'popcount',
    'bit_mask'
]


def sha256(data):
    """Produces a SHA256 hash of the input.

    :param data: The input data to hash.
    :return: The resulting hash.
    """
    h = hashes.Hash(hashes.SHA256(), default_backend())
    h.update(data)
    return h.finalize()


def bytes2int(value):
    """Parses an arbitrarily sized integer from a byte string.

    :param value: A byte string encoding a big endian unsigned integer.
    :return: The parsed int.
    """
    return int(b2a_hex(value), 16)


def int2bytes(value, minlen=-1):
    """Encodes a non-negative int as a big endian byte string.

    :param value: The integer value to encode.
    :param minlen: An optional minimum length for the resulting byte string.
    :return: The value encoded as a big endian byte string.
    """
    return value.to_bytes(max(minlen, (value.bit_length() + 7) // 8, 1), 'big')


def derive_seed(master_seed, run_index):
    """Mixes a master seed and a replica index into a 64-bit seed.

    The seed is the first 8 bytes (big endian) of
    SHA256(int2bytes(master_seed, 8) || int2bytes(run_index, 8)).

    :param master_seed: Non-negative integer master seed.
    :param run_index: Non-negative replica index.
    :return: An integer in [0, 2**64).
    """
    if master_seed < 0 or run_index < 0:
        raise ValueError('Seeds must be non-negative')
    digest = sha256(int2bytes(master_seed, 8) + int2bytes(run_index, 8))
    return bytes2int(digest[:8])


def bit_mask(length):
    """Returns the integer with the lowest `length` bits set."""
    return (1 << length) - 1


def popcount(states, length):
    """Counts set bits of an array of basis states.

    :param states: Integer array of bit patterns.
    :param length: Number of bits to consider.
    :return: An int64 array with the number of set bits per entry.
    """
    states = np.asarray(states, dtype=np.int64)
    count = np.zeros(states.shape, dtype=np.int64)
    for b in range(length):
        count += (states >> b) & 1
    return count
