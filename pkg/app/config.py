import os
from dotenv import load_dotenv

load_dotenv()

APP_ENV: str = os.getenv("APP_ENV", "development")
PORT: int = int(os.getenv("PORT", "8000"))
CORS_ORIGINS: str = os.getenv("CORS_ORIGINS", "")
LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
RUNS_DIR: str = os.getenv("RUNS_DIR", "runs")


def is_production() -> bool:
    return APP_ENV == "production"


def get_api_key() -> str:
    """API key guarding the artifact API. Only the HTTP surface needs it; fails fast when unset."""
    key = os.getenv("API_KEY", "")
    if not key:
        raise RuntimeError("API_KEY environment variable is required to serve run artifacts")
    return key


def get_cors_origins() -> list[str]:
    if not CORS_ORIGINS:
        return []
    return [origin.strip() for origin in CORS_ORIGINS.split(",") if origin.strip()]
