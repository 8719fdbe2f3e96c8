import os
from dotenv import load_dotenv

load_dotenv()

OUTPUT_DIR = os.getenv("TOPODYN_OUTPUT_DIR", "reports")
LOG_LEVEL = os.getenv("TOPODYN_LOG_LEVEL", "INFO")

REPORT_SCHEMA_VERSION = "1.0"

DEFAULT_MESH = float(os.getenv("TOPODYN_DEFAULT_MESH", "0.02"))
DEFAULT_EPSILON = float(os.getenv("TOPODYN_DEFAULT_EPSILON", "0.05"))
DEFAULT_HORIZON = int(os.getenv("TOPODYN_DEFAULT_HORIZON", "200"))
DEFAULT_CAP = int(os.getenv("TOPODYN_DEFAULT_CAP", "10000"))
DEFAULT_SEED = int(os.getenv("TOPODYN_DEFAULT_SEED", "0"))

# delta-edges use d < delta with this absolute slack
CHAIN_TOLERANCE = 1e-12
SPLIT_TOLERANCE = 1e-12
UNIT_CIRCLE_TOLERANCE = 1e-9
INVERSE_TOLERANCE = 1e-10
ORBIT_CONSISTENCY_TOLERANCE = 1e-9

SU_DECAY_WINDOW = 60
# wrapped distance at which a leaf displacement counts as collapsed
LEAF_TOLERANCE = 1e-5
LADDER_N_MAX = 64
EXACT_BOUND_NODE_LIMIT = 3000
