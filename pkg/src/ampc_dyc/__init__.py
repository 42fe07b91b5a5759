"""Coordinated path tracking (adaptive LTV MPC) and yaw stability control
(LQR direct yaw moment + torque allocation) for a four-wheel-drive electric
vehicle, with a closed-loop simulation harness."""

__version__ = "0.1.0"
