import { ApiClient } from "./api.js";
import { Console } from "./console.js";

const POLL_MS = 5000;

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const fromQuery = params.get("service");
  if (fromQuery) return fromQuery;
  const fromAttr = document.documentElement.dataset.service;
  if (fromAttr) return fromAttr;
  return "http://127.0.0.1:8077";
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const console_ = new Console(root, new ApiClient(serviceUrl()));
void console_.bootstrap().then(() => {
  setInterval(() => void console_.pollTick(), POLL_MS);
});
