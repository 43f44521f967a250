"""HTTP service exposing the pipeline runners.

One POST endpoint per pipeline, request/response bodies from schemas.
Tool errors map onto HTTP codes by family: bad request configuration is
400, unusable input data is 422, numerical failure inside a fit is 500.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .errors import ConfigError, DataError, DsukitError, NumericalError
from .pipeline import (
    run_analyze,
    run_bitrate,
    run_bpe_train,
    run_convert,
    run_encode,
    run_fit,
)
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    BitrateRequest,
    BitrateResponse,
    BpeTrainRequest,
    BpeTrainResponse,
    ConvertRequest,
    ConvertResponse,
    EncodeRequest,
    EncodeResponse,
    FitRequest,
    FitResponse,
    HealthResponse,
)

_HTTP_STATUS = {ConfigError: 400, DataError: 422, NumericalError: 500}


def create_app() -> FastAPI:
    app = FastAPI(title="dsukit", version=__version__)

    @app.exception_handler(DsukitError)
    async def _tool_error(request: Request, exc: DsukitError) -> JSONResponse:
        status = _HTTP_STATUS.get(type(exc), 500)
        return JSONResponse(
            status_code=status,
            content={"error": str(exc), "exit_code": exc.exit_code},
        )

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/fit", response_model=FitResponse)
    async def fit(req: FitRequest) -> FitResponse:
        return run_fit(req)

    @app.post("/encode", response_model=EncodeResponse)
    async def encode(req: EncodeRequest) -> EncodeResponse:
        return run_encode(req)

    @app.post("/analyze", response_model=AnalyzeResponse)
    async def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
        return run_analyze(req)

    @app.post("/bpe/train", response_model=BpeTrainResponse)
    async def bpe_train(req: BpeTrainRequest) -> BpeTrainResponse:
        return run_bpe_train(req)

    @app.post("/bitrate", response_model=BitrateResponse)
    async def bitrate(req: BitrateRequest) -> BitrateResponse:
        return run_bitrate(req)

    @app.post("/convert", response_model=ConvertResponse)
    async def convert(req: ConvertRequest) -> ConvertResponse:
        return run_convert(req)

    return app


app = create_app()
