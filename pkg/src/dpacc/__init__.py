"""Collateralized commit-reveal protocol library and discrete-block
simulator: private, anonymous transaction commitments backed by smart
contract wallets, plus the MEV-resistant venues built on them."""

__version__ = "0.1.0"
