"""
Result Store — JSON/CSV 기반 결과 저장소
========================================
시나리오 실행(run) 결과를 출력 디렉토리 아래 파일로 저장한다.

<outdir>/
  meta.json                         — run 메타데이터 (created_at, status, command, config)
  summaries.csv                     — 전체 run 요약 테이블
  <scenario>/<engine>/<workload>/[label]/
    summary.json    — RunSummary (타임스탬프 없음)
    timeline.csv    — 1초 버킷 처리량
    oplog.csv       — op 로그
    traffic.dot     — 트래픽 행렬 (Graphviz)

사용법:
    store = ResultStore(Path("results"))
    store.create_run({"command": "run"})
    store.write_json(["lsf_sweep", "cassandra", "A", "lsf-0.2"], "summary.json", summary.to_dict())
    store.update_run_status("completed")
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import pandas as pd

from fragsim.utils.logger import logger

RUN_STATUSES = {
    "in_progress": "실행 중",
    "completed": "모든 시뮬레이션 완료",
    "failed": "런타임 오류, 부분 결과만 있음",
}


class ResultStoreError(OSError):
    pass


class ResultStore:
    def __init__(self, base_dir: Path):
        self.base_dir = Path(base_dir)
        try:
            self.base_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ResultStoreError(f"output path not writable: {self.base_dir} ({e})") from e

    # ── Run 메타 ──

    def create_run(self, info: Optional[dict] = None) -> dict:
        meta = {
            "created_at": datetime.now().isoformat(),
            "status": "in_progress",
            **(info or {}),
        }
        self._write_json(self.base_dir / "meta.json", meta)
        return meta

    def update_run_status(self, status: str, **fields) -> None:
        if status not in RUN_STATUSES:
            raise ValueError(f"unknown run status: {status}")
        meta_path = self.base_dir / "meta.json"
        meta = self._read_json(meta_path)
        meta["status"] = status
        meta["updated_at"] = datetime.now().isoformat()
        meta.update(fields)
        self._write_json(meta_path, meta)

    def load_meta(self) -> dict:
        return self._read_json(self.base_dir / "meta.json")

    # ── 저장 ──

    def run_dir(self, parts: list[str]) -> Path:
        d = self.base_dir.joinpath(*[str(p) for p in parts])
        d.mkdir(parents=True, exist_ok=True)
        return d

    def write_json(self, parts: list[str], name: str, data: Any) -> Path:
        path = self.run_dir(parts) / name
        self._write_json(path, data)
        return path

    def write_text(self, parts: list[str], name: str, text: str) -> Path:
        path = self.run_dir(parts) / name
        path.write_text(text, encoding="utf-8")
        return path

    def write_frame(self, parts: list[str], name: str, frame: pd.DataFrame) -> Path:
        path = self.run_dir(parts) / name
        frame.to_csv(path, index=False)
        return path

    # ── 조회 ──

    def list_summaries(self) -> list[dict]:
        summaries = []
        for path in sorted(self.base_dir.rglob("summary.json")):
            summary = self._read_json(path)
            if summary:
                summaries.append(summary)
        return summaries

    def load_summary(self, parts: list[str]) -> dict:
        return self._read_json(self.base_dir.joinpath(*parts) / "summary.json")

    # ── 내부 헬퍼 ──

    @staticmethod
    def _write_json(path: Path, data: Any) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, default=str) + "\n",
                encoding="utf-8",
            )
        except OSError as e:
            raise ResultStoreError(f"cannot write {path}: {e}") from e

    @staticmethod
    def _read_json(path: Path) -> Any:
        if not path.exists():
            return {}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            logger.warning(f"JSON 읽기 실패: {path} ({e})")
            return {}
