"""Single-agent icicle formation on the FCC lattice of the 3D hybrid model."""

__version__ = "0.1.0"
