"""Exception hierarchy shared by the mesh, element and solver layers."""


class HRVemError(Exception):
    """Base class for every error raised by the package."""


class MeshError(HRVemError):
    pass


class MeshParseError(MeshError):
    pass


class MeshTopologyError(MeshError):
    pass


class MeshGeometryError(MeshError):
    pass


class DegenerateCellError(MeshGeometryError):
    """A cell is too flat/small for a local computation to be well posed."""

    def __init__(self, message, cell=None):
        if cell is not None:
            message = f"cell {cell}: {message}"
        super().__init__(message)
        self.cell = cell


class SolverError(HRVemError):
    pass


class ConfigError(HRVemError):
    pass
