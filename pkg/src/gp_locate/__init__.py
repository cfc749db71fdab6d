"""Gaussian-process user positioning from uplink RSS."""
