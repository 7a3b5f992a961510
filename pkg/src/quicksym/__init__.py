"""Symbol-comparison cost of QuickSort on random words.

Modules: ``source`` (word sources and prefix probabilities), ``keys`` (lazy
keys and counted comparison), ``sorter`` (instrumented QuickSort),
``exact`` (exact and Poissonized moments of the key-comparison count),
``lemmas`` (exact sign checks), ``covdp`` (conditional covariance table),
``mc`` (Poissonized Monte Carlo), ``plot`` and ``cli``.
"""

__version__ = "0.1.0"
