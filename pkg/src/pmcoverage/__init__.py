"""Multi-robot ergodic coverage driven by Perona-Malik diffusion of the coverage error."""

__version__ = "0.1.0"
