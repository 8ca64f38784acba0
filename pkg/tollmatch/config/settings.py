import os
from functools import lru_cache
from dotenv import load_dotenv

load_dotenv()


class Settings:
    """Environment-backed settings; scenario constants live in ScenarioConfig."""

    def __init__(self) -> None:
        self.env = os.getenv("TOLLMATCH_ENV", "local")
        self.output_dir = os.getenv("TOLLMATCH_OUT", "out")
        self.log_level = os.getenv("TOLLMATCH_LOG_LEVEL", "INFO").upper()
        # Parallel workers for ratio trials and batch runs (1 = in-process)
        self.workers = int(os.getenv("TOLLMATCH_WORKERS", "1"))
        # Largest driver/slot count the exhaustive Pareto checker accepts
        self.pareto_limit = int(os.getenv("TOLLMATCH_PARETO_LIMIT", "8"))


@lru_cache
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
