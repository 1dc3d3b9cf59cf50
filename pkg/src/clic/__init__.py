"""CLIC: composable human-machine service systems on demand.

A component pool of sensing, processing, and actuation services (human
and machine), procured per blueprint through auctions and negotiation,
wired into hub-routed dataflow pipelines, watched by an SLA monitor
that can hot-swap a failing component without losing a message, and
steered at run time by an arbitrated goal set.
"""

__version__ = "0.1.0"
