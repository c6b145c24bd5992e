// Entry point: wire the controller to the page using ?api=, ?session=,
// and ?analyst= query parameters.

import { VetClient } from "./api.js";
import { VetApp } from "./app.js";

function required(params: URLSearchParams, name: string): string {
  const value = params.get(name);
  if (!value) {
    throw new Error(`missing required query parameter: ${name}`);
  }
  return value;
}

const params = new URLSearchParams(window.location.search);
const root = document.getElementById("app");
if (!root) {
  throw new Error("page is missing the #app container");
}

try {
  const client = new VetClient(
    params.get("api") ?? "http://127.0.0.1:8642",
    required(params, "session"),
  );
  const app = new VetApp(root, client, { analyst: params.get("analyst") ?? "anonymous" });
  void app.start();
} catch (error) {
  root.textContent = error instanceof Error ? error.message : String(error);
}
