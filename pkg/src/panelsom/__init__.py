"""Self-organizing-map segmentation of longitudinal panels and Markov analysis of class trajectories."""

__version__ = "0.1.0"
