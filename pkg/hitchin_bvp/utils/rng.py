#!/usr/bin/env python3

import zlib

import numpy as np


def _stream_key(stream):
    return tuple(s if isinstance(s, int) else zlib.crc32(str(s).encode("utf-8")) for s in stream)


def generator(seed, *stream):
    """Counter-based generator for the named stream under `seed`.

    Streams are independent of each other and of call order, so
    `generator(7, "mu")` is the same everywhere it is requested.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=_stream_key(stream))
    return np.random.Generator(np.random.Philox(seq))

