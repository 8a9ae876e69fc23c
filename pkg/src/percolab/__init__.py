"""Critical bond percolation on the hypercube and its Erdos-Renyi scaling limits."""
__version__ = "0.1.0"
