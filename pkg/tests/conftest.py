import sys
from pathlib import Path

# make tests/ importable (oracles, helpers) regardless of invocation dir
sys.path.insert(0, str(Path(__file__).parent))
