"""Side-information scalable source coding: rate regions, optimizers and a binning simulator."""

__version__ = "0.1.0"
