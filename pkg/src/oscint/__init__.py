"""Numerics for strongly singular oscillatory operators along (t, t^k)."""
