"""
VRex-Mixup command-line entry point.

Usage: python app.py <command> [options]; see ``python app.py --help``.
"""

import sys
from pathlib import Path

# Add current directory to Python path for imports
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from vrex_mixup.cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
