"""Two-phase incompressible flow with a stabilized strongly coupled scheme.

A phase-field description of two immiscible fluids is advanced fully
implicitly: each time step iterates linearized phase and flow solves to a
joint fixed point.  The package provides the structured discretization, the
scheme, runtime monitors for the quantities its stability theory controls,
a manufactured-solution verification harness and a command-line driver.
"""

__version__ = "0.1.0"
