"""surgsynth: seed-driven synthetic surgical-instrument clips with
pixel-exact masks, chroma compositing, and dataset tooling."""

__version__ = "0.1.0"
