"""Trend check for the ring+lattice desk layout at 1 and 10 kHz."""
from scratch_diag4 import run, ring, lattice

if __name__ == "__main__":
    run("ring+lat8-q10k", lambda g: ring(g) + lattice(g, 8), q0=10e3)
    run("ring+lat8-q1k", lambda g: ring(g) + lattice(g, 8), q0=1e3)
