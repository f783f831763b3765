from pathlib import Path

import pytest

VECTORS = Path(__file__).parent / "vectors"


@pytest.fixture
def golden():
    def load(name: str) -> bytes:
        return bytes.fromhex((VECTORS / f"{name}.hex").read_text().strip())

    return load
