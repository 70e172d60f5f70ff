import os
from dotenv import load_dotenv

load_dotenv()

OUT_DIR = os.getenv("RISKDP_OUT_DIR", "runs")
JOBS = int(os.getenv("RISKDP_JOBS", "1"))
MASTER_SEED = int(os.getenv("RISKDP_SEED", "0"))
LOG_LEVEL = os.getenv("RISKDP_LOG_LEVEL", "INFO").upper()
API_HOST = os.getenv("RISKDP_API_HOST", "127.0.0.1")
API_PORT = int(os.getenv("RISKDP_API_PORT", "8000"))

if JOBS < 1:
    raise ValueError("RISKDP_JOBS must be a positive integer")


def get_settings() -> dict:
    return {
        "out_dir": OUT_DIR,
        "jobs": JOBS,
        "seed": MASTER_SEED,
        "log_level": LOG_LEVEL,
        "api_host": API_HOST,
        "api_port": API_PORT,
    }
