"""
fragsim — Fragmented Hybrid Cloud 이산 사건 에뮬레이터
=====================================================
지리적으로 흩어진 데이터센터 사이의 지연/대역폭 변동, 링크 단절, 노드 추가/제거가
분산 DB(Cassandra, MongoDB, Redis Cluster, MySQL Cluster)에 주는 영향을 결정론적으로 재현한다.

모듈:
    topology     노드/링크/QoS 스케줄, 기준 행렬, 메쉬 생성
    simkernel    이벤트 루프, 링크별 FIFO 전송, 트레이스 해시
    router       최소 홉 경로, 30초 재계산 지연, 오버레이 네트워크
    dbmodels     엔진별 배치/op 계획/멤버십 변경
    workload     YCSB A–F 생성기 + closed-loop 실행기
    scenarios    LSF sweep, resize, link churn
    metrics      처리량 타임라인, 트래픽 행렬, 요약/내보내기
    cli          validate / run / dump-presets / replay-trace
"""

__version__ = "0.1.0"
