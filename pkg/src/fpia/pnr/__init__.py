"""Placement and routing of packed clusters onto the FPIA fabric."""

from fpia.pnr.netlist import Net, Netlist, build_netlist
from fpia.pnr.placer import Placement, default_grid, place
from fpia.pnr.router import (
    DelayParams,
    RoutedDesign,
    RoutingError,
    Unroutable,
    audit_routes,
    critical_path_delay,
    estimate_channel_width,
    min_channel_width,
    relaxed_critical_path,
    route,
)

__all__ = [
    "Net", "Netlist", "build_netlist", "Placement", "default_grid", "place",
    "DelayParams", "RoutedDesign", "RoutingError", "Unroutable", "audit_routes",
    "critical_path_delay", "estimate_channel_width", "min_channel_width", "relaxed_critical_path", "route",
]
