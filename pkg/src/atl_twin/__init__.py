"""Digital twin of a robotic tape laying cell.

Plant models (heating, compaction force, pneumatics, tape), the control
stack (PID loops, process sequencer, Modbus force-device interface,
inverse kinematics and mold-trajectory planning), a deterministic
fixed-step runtime, and an operator HTTP/WS API.
"""

__version__ = "0.1.0"
