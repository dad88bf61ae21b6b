"""Yee-grid FDTD with multicomplex-valued fields and coefficients."""
