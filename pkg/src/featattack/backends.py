"""Minimal HTTP chat backends for live judge and victim clients.

Credentials come exclusively from environment variables; endpoint, model
name, and timeout are plain configuration. The wire format is the common
chat-completions shape (messages list, content parts for images). These
classes are optional plumbing: every mathematical test runs on the mock
judge and victim instead.
"""

from __future__ import annotations

import base64
import io
import json
import os
import urllib.request
from typing import Callable

from PIL import Image

from .core import ImageTensor
from .errors import ConfigurationError, EncoderBackendError
from .evaluation import DESCRIBE_PROMPT

DEFAULT_API_KEY_VAR = "FEATATTACK_API_KEY"


def _default_post(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json", **headers},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


class HttpChatBackend:
    """Posts a single-user-message chat request and returns the reply text."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout: float = 60.0,
        api_key_var: str = DEFAULT_API_KEY_VAR,
        post: Callable[[str, dict, dict, float], dict] = _default_post,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.api_key_var = api_key_var
        self.post = post

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_var)
        if not key:
            raise ConfigurationError(
                f"environment variable {self.api_key_var} is not set; "
                "live backends read credentials only from the environment"
            )
        return {"Authorization": f"Bearer {key}"}

    def build_payload(self, content) -> dict:
        return {
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        }

    @staticmethod
    def extract_reply(response: dict) -> str:
        try:
            return response["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EncoderBackendError(f"malformed chat response: {response!r}") from exc

    def __call__(self, prompt: str) -> str:
        response = self.post(self.endpoint, self.build_payload(prompt), self._headers(), self.timeout)
        return self.extract_reply(response)


def image_data_uri(img: ImageTensor) -> str:
    byte_img = (img.data * 255.0 + 0.5).astype("uint8")
    buf = io.BytesIO()
    Image.fromarray(byte_img, "RGB").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


class HttpVictimClient:
    """Sends (prompt, image) to a multimodal chat endpoint."""

    def __init__(self, backend: HttpChatBackend, prompt: str = DESCRIBE_PROMPT) -> None:
        self.backend = backend
        self.prompt = prompt

    def build_content(self, img: ImageTensor) -> list:
        return [
            {"type": "text", "text": self.prompt},
            {"type": "image_url", "image_url": {"url": image_data_uri(img)}},
        ]

    def respond(self, img: ImageTensor) -> str:
        payload = self.backend.build_payload(self.build_content(img))
        response = self.backend.post(
            self.backend.endpoint, payload, self.backend._headers(), self.backend.timeout
        )
        text = self.backend.extract_reply(response)
        if not text:
            raise EncoderBackendError("victim backend returned an empty response")
        return text
