import sys
from pathlib import Path

# allow running pytest from a fresh checkout without the editable install
sys.path.insert(0, str(Path(__file__).parent / "src"))
