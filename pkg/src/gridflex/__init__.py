"""gridflex: distribution-grid congestion decision support.

Two halves, glued by an HTTP service and a scenario CLI:

* a Gaussian factor-graph model of grid quantities that predicts
  operational-range violations and estimates how much flexibility is needed,
  and where, to clear them;
* a scheduled time-series forecasting subsystem issuing day-ahead forecasts
  at 15-minute resolution that feed the grid model.
"""

__version__ = "0.1.0"
