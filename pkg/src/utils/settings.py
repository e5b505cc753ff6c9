class objectless(object):
    def __new__(cls, *args, **kwargs):
        raise RuntimeError('%s should not be instantiated' % cls)


class Settings(objectless):
    """Never to be instantiated."""
    _version = "0.3"
    _copyright = "©2024 TriAvatar Group"
    _verbose = True
    _debug = False
    _chunk_size = 16384
    _memory_budget_mb = 2048
    _workers = 1

    @classmethod
    def get_version(cls) -> str:
        return cls._version

    @classmethod
    def set_version(cls, val: str) -> None:
        cls._version = val

    @classmethod
    def get_copyright(cls) -> str:
        return cls._copyright

    @classmethod
    def set_copyright(cls, val: str) -> None:
        cls._copyright = val

    @classmethod
    def is_verbose(cls) -> bool:
        return cls._verbose

    @classmethod
    def set_verbose(cls, val: bool) -> None:
        cls._verbose = val

    @classmethod
    def is_debug(cls) -> bool:
        return cls._debug

    @classmethod
    def set_debug(cls, val: bool) -> None:
        cls._debug = val

    @classmethod
    def get_chunk_size(cls) -> int:
        return cls._chunk_size

    @classmethod
    def set_chunk_size(cls, val: int) -> None:
        if val < 1:
            raise ValueError("Chunk size must be positive.")
        cls._chunk_size = int(val)

    @classmethod
    def get_memory_budget_mb(cls) -> int:
        return cls._memory_budget_mb

    @classmethod
    def set_memory_budget_mb(cls, val: int) -> None:
        cls._memory_budget_mb = int(val)

    @classmethod
    def get_workers(cls) -> int:
        return cls._workers

    @classmethod
    def set_workers(cls, val: int) -> None:
        cls._workers = max(1, int(val))

    @staticmethod
    def line(rep_s: str, n_reps: int) -> str:
        return "".join([rep_s]*n_reps)
