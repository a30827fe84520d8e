"""Full-field photoacoustic tomography with variable sound speed and damping.

Forward simulation of the damped wave equation, exterior Radon data,
exact adjoints and iterative or variational inversion.
"""
__version__ = "0.1.0"
