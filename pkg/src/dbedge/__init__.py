"""Discrete Deligne–Beilinson cochains for edge modes of Maxwell theory."""
