class NestFragError(ValueError):
    """Error carrying a machine-readable code such as "OVERLAP" or "TOO_LARGE".

    Args:
        code (str): Stable error code reported by the CLI and the API
        message (str): Human readable explanation
    """

    def __init__(self, code, message=""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message

    def to_dict(self):
        return {"error": self.code, "message": self.message}
