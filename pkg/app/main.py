from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .api.routes import router
from .core.config import get_settings
from .core.logging_config import logging_configured, setup_logging


@asynccontextmanager
async def lifespan(app: FastAPI):
    # Logging diatur saat server start; `perfectsim serve` sudah mengaturnya lebih dulu
    if not logging_configured():
        settings = get_settings()
        setup_logging(log_level=settings.log_level, log_file=settings.log_file)
    yield


app = FastAPI(
    title="Perfect Sim",
    description="Perfect simulation Markov chain dengan coupled chains dan sample set",
    version="0.1.0",
    lifespan=lifespan,
)

# Konfigurasi CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(router, prefix="/api/v1")


@app.get("/")
async def root():
    return {
        "message": "Selamat datang di Perfect Sim",
        "status": "online",
        "version": "0.1.0"
    }


@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "services": {
            "twostate": "operational",
            "normal": "operational",
            "calibrate": "operational"
        }
    }
