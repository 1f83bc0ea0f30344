# -*- coding: utf-8 -*-
"""Signal Detection Lab: CFAR detector benchmarking for unknown-parameter signals in AWGN."""

__version__ = "1.0.0"
