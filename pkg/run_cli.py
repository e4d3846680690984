#!/usr/bin/env python3
"""
Run the csgrav command line from a source checkout.
"""
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

if __name__ == "__main__":
    from csgrav.main import main

    sys.exit(main())
