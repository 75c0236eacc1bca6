"""
FastAPI application for the axisymmetric elasticity solver.
Main entry point with startup/shutdown events and health checks.
"""

import time
from contextlib import asynccontextmanager
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from src.core.config import config
from src.core.models import HealthResponse
from src.core.monitor import RateMonitor
from src.agents.study_agent import ConvergenceAgent
from src.api.routes import router, set_agent
from src.fem.spaces import SUPPORTED_DEGREES, reference_basis
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

# Global variables for app state
start_time = time.time()
agent = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager."""
    global agent

    # Startup
    logger.info("Starting axisymmetric elasticity service")

    try:
        # Reference bases are cached, build them once up front
        for k in SUPPORTED_DEGREES:
            basis = reference_basis(k)
            logger.info(f"Reference BDM_{k} ready, DOF condition {basis.condition_number:.2e}")

        agent = ConvergenceAgent(RateMonitor())
        set_agent(agent)
        logger.info(f"Initialized ConvergenceAgent (defaults {config.material_defaults()})")

        logger.info("Application startup completed successfully")

    except Exception as e:
        logger.error(f"Failed to initialize application: {e}")
        raise

    yield

    # Shutdown
    logger.info("Shutting down application")
    set_agent(None)
    agent = None
    logger.info("Application shutdown completed")


# Create FastAPI app
app = FastAPI(
    title="Axisymmetric Weak-Symmetry Elasticity",
    description="Mixed BDM_k finite elements on the meridian domain with convergence studies",
    version="1.0.0",
    lifespan=lifespan
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include API routes
app.include_router(router)


@app.get("/healthz", response_model=HealthResponse)
async def health_check():
    """
    Health check endpoint.
    Returns service status and uptime.
    """
    uptime = time.time() - start_time

    if agent is None:
        raise HTTPException(
            status_code=503,
            detail="Service not ready - convergence agent not initialized"
        )

    return HealthResponse(
        service="ok",
        solver="ok",
        uptime_seconds=round(uptime, 2)
    )


@app.get("/")
async def root():
    """Root endpoint with basic service information."""
    return {
        "service": "Axisymmetric Weak-Symmetry Elasticity",
        "version": "1.0.0",
        "status": "running",
        "defaults": {**config.material_defaults(), **config.study_defaults()},
        "endpoints": {
            "health": "/healthz",
            "studies": "/api/v1/studies",
            "determinant": "/api/v1/checks/determinant",
            "docs": "/docs"
        }
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
