"""Byzantine/rational committee consensus game: simulation and equilibrium analysis."""
