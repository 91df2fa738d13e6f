"""canwire: software CAN-bus security testbed.

A virtual CAN bus connects a vehicle-simulator ECU and an instrument-cluster
ECU while a rogue man-in-the-middle device spoofs, blocks and floods traffic
under live remote control.
"""

from .frame import CanFrame, make_frame
from .catalog import Catalog, catalog, next_counter
from .bus import Scheduler, VirtualBus

__all__ = ["CanFrame", "make_frame", "Catalog", "catalog", "next_counter",
           "Scheduler", "VirtualBus"]

__version__ = "0.1.0"
