"""Scan-kernel selection.

Prefers the compiled extension when it is built; falls back to the pure
Python implementation otherwise. Set PCFG_KERNEL=pure to force the
fallback (used by the kernel comparison benchmark).
"""

import os

if os.environ.get("PCFG_KERNEL", "").lower() == "pure":
    from .scan_py import KERNEL_NAME, contains_cfi_scan, scan_block
else:
    try:
        from ._scan_c import KERNEL_NAME, contains_cfi_scan, scan_block  # type: ignore
    except ImportError:
        from .scan_py import KERNEL_NAME, contains_cfi_scan, scan_block

__all__ = ["scan_block", "contains_cfi_scan", "KERNEL_NAME"]
