"""Direct multi-class forecasting of wind-power ramp events."""

__version__ = "0.1.0"
