from .parallel import ProcessMapper, parallel_map_reduce
from .persistence import checksums, read_jsonl, sha256_file, write_csv, write_json, write_jsonl
from .manifest import MANIFEST_NAME, RunManifest
from .run_registry import REGISTRY_NAME, RunRegistry
from .experiments import EXPERIMENTS, RunResult, run
from .acceptance import CRITERIA, AcceptanceReport, CriterionResult, run_acceptance
