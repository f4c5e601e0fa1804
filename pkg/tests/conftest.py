# keeps the tests directory importable (oracles.py helpers)
