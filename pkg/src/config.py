import os
import logging
from dotenv import load_dotenv


load_dotenv()

logger = logging.getLogger("config")

LOG_LEVEL = os.getenv("COARSE_LOG_LEVEL", "INFO")
DEFAULT_SEED = int(os.getenv("COARSE_SEED", "0"))
DEFAULT_THREADS = int(os.getenv("COARSE_THREADS", "1"))
DEFAULT_SAMPLE_COUNT = int(os.getenv("COARSE_CACHE_SAMPLES", "5"))
DEFAULT_VISIBILITY_DILATION = int(os.getenv("COARSE_VISIBILITY_DILATION", "1"))
DEFAULT_ANCHOR_COUNT = int(os.getenv("COARSE_ANCHOR_COUNT", "2"))

OUTPUT_DIR = os.getenv("COARSE_OUTPUT_DIR")
if not OUTPUT_DIR:
    OUTPUT_DIR = "./coarse_output"
    logger.warning("COARSE_OUTPUT_DIR not set. Using default: %s", OUTPUT_DIR)
