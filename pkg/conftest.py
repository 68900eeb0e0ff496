import sys
from pathlib import Path

# Flat top-level modules: make them importable from tests/ and scripts/.
sys.path.insert(0, str(Path(__file__).resolve().parent))
