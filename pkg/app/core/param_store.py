import numpy as np
from typing import Dict, Iterator, List, Optional, Tuple


class ParamStore:
    """
    Named parameter tensors, each paired with a gradient buffer of the same
    shape. Insertion order is preserved and defines the serialization order.
    """
    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._params: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._params:
            raise ValueError(f"Parameter '{name}' already exists")
        array = np.array(value, dtype=self.dtype, copy=True)
        self._params[name] = array
        self._grads[name] = np.zeros_like(array)
        return array

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"Unknown parameter '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._params.items())

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def grads(self) -> Dict[str, np.ndarray]:
        return dict(self._grads)

    def accumulate(self, name: str, gradient: np.ndarray) -> None:
        buffer = self._grads[name]
        if buffer.shape != gradient.shape:
            raise ValueError(
                f"Gradient for '{name}' has shape {gradient.shape}, parameter has {buffer.shape}"
            )
        buffer += gradient

    def zero_grad(self) -> None:
        for buffer in self._grads.values():
            buffer.fill(0)

    def set(self, name: str, value: np.ndarray) -> None:
        """Overwrites a parameter in place, keeping views held by layers valid."""
        target = self[name]
        if target.shape != value.shape:
            raise ValueError(f"Parameter '{name}' has shape {target.shape}, got {value.shape}")
        target[...] = value

    def num_scalars(self) -> int:
        return int(sum(array.size for array in self._params.values()))

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in self._grads.values())))

    def copy(self, dtype: Optional[np.dtype] = None) -> 'ParamStore':
        clone = ParamStore(self.dtype if dtype is None else dtype)
        for name, array in self._params.items():
            clone.add(name, array)
        return clone

    def subset(self, prefix: str) -> List[str]:
        return [name for name in self._params if name.startswith(prefix)]
