"""
fragsim — Main Entry Point
==========================
실행 문서 검증 → 시나리오 실행 → 결과 저장 (fragsim.cli 로 위임)

사용법:
    # 샘플 실행 문서 검증
    python main.py validate config/sample_run.json

    # LSF sweep (Cassandra, 워크로드 A–F)
    python main.py run --scenario lsf_sweep --engine cassandra --workloads A..F

    # 다운사이징/업사이징
    python main.py run config/sample_run.json --scenario resize --engine mongodb

    # 기준 행렬 + 워크로드 프리셋 출력
    python main.py dump-presets
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from fragsim.cli import main

if __name__ == "__main__":
    sys.exit(main())
