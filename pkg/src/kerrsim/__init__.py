"""kerrsim: cross-Kerr optomechanics simulator and protocol toolkit.

Layers:

* :mod:`kerrsim.fock` - truncated Fock-space operators and states
* :mod:`kerrsim.model` - system specifications and Hamiltonian builders
* :mod:`kerrsim.engine` - Lindblad time evolution
* :mod:`kerrsim.protocols` - controlled-phase-flip gate, photon-to-phonon
  converter, and multi-port conversion network
* :mod:`kerrsim.commands` - config-driven batch commands producing result
  tables
* :mod:`kerrsim.service` - FastAPI application exposing the commands
* :mod:`kerrsim.cli` - thin client command line
"""

__version__ = "0.1.0"
