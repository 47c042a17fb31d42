"""Algorithm selection for black-box optimization from probing trajectories.

Subpackages and modules, bottom up: ``problems`` (BBOB-style functions),
``optimizers`` (CMA-ES, DE, PSO with evaluation logging), ``trajectories``
(probing series and winner labels), ``primitives`` (distances, features,
trees), ``classifiers``, ``evaluation`` (LOIO/LOPO protocols and reports),
``tuning`` and the ``pipeline``/``cli`` front end.
"""

__version__ = "0.1.0"
