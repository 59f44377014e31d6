from .checkpoints import ArtifactNotFoundError, CheckpointFormatError, load_checkpoint, save_checkpoint
from .replay_buffer import ReplayBuffer
from .run_store import RunStore

__all__ = ["ArtifactNotFoundError", "CheckpointFormatError", "load_checkpoint", "save_checkpoint", "ReplayBuffer", "RunStore"]
