"""Vendor handler registry."""

from __future__ import annotations

from ..detect import VendorFormat
from ..errors import UnsupportedFormat
from .aperio import AperioHandler
from .base import GenericTiffHandler, PlanOptions, ScanResult, VendorHandler
from .hamamatsu import HamamatsuHandler
from .isyntax import ISyntaxHandler
from .mirax import MiraxHandler
from .ventana import VentanaHandler

_HANDLERS: dict[VendorFormat, VendorHandler] = {
    VendorFormat.APERIO: AperioHandler(),
    VendorFormat.HAMAMATSU: HamamatsuHandler(),
    VendorFormat.VENTANA: VentanaHandler(),
    VendorFormat.MIRAX: MiraxHandler(),
    VendorFormat.PHILIPS_ISYNTAX: ISyntaxHandler(),
    VendorFormat.GENERIC_TIFF: GenericTiffHandler(),
}


def handler_for(vendor: VendorFormat) -> VendorHandler:
    h = _HANDLERS.get(vendor)
    if h is None:
        raise UnsupportedFormat(f"no handler for {vendor.slug}")
    return h


__all__ = ["handler_for", "PlanOptions", "ScanResult", "VendorHandler"]
