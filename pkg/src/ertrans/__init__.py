"""Dark-state microwave-to-optical transduction simulator and ¹⁶⁷Er:YSO
spin-Hamiltonian spectroscopy."""

__version__ = "0.1.0"
