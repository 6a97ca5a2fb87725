"""HHO decoupled mixed solver for the biharmonic problem on polygonal meshes."""
__version__ = "0.1.0"
