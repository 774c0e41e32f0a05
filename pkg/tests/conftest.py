import os
import sys
from pathlib import Path

# Pin BLAS to one thread before numpy loads so runtimes reflect a single core
# and reductions are deterministic.
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

sys.path.insert(0, str(Path(__file__).parent))
