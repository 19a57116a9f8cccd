"""
evsync - event-triggered synchronization of stochastic linear agents

The library designs synchronizing gains for noisy linear multi-agent systems
and uses them to run a steady-state Kalman filter distributed over a sensor
network. Sensors talk to their neighbours only when a local trigger fires.
"""

__version__ = "0.1.0"
