import { AnnotationApp } from "./app.js";

function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session_id");
  const voterId = params.get("voter_id");
  if (!sessionId || !voterId) {
    root.textContent = "missing ?session_id=…&voter_id=… query parameters";
    return;
  }
  const app = new AnnotationApp(root, { sessionId, voterId });
  void app.start();
}

boot();
