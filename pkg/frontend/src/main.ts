/**
 * Entry point: read connection settings from the query string, build the
 * session, and wire the keyboard.
 *
 * Expected query parameters: server (base URL, default same origin),
 * annotator, token, mode (labeling|consensus).  Without an annotator and
 * token a small connect form is shown instead.
 */

import { ApiClient, type TaskMode } from "./api.js";
import { handleKey, UiSession } from "./session.js";
import { AnnotationView, bindElements } from "./ui.js";

function connectForm(): void {
  const prompt = document.querySelector("#prompt");
  if (prompt === null) return;
  prompt.innerHTML = `
    <form id="connect">
      <label>annotator <input name="annotator" required></label>
      <label>token <input name="token" type="password" required></label>
      <label>mode
        <select name="mode">
          <option value="labeling">labeling</option>
          <option value="consensus">consensus</option>
        </select>
      </label>
      <button type="submit">start</button>
    </form>`;
  const form = document.querySelector<HTMLFormElement>("#connect");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const params = new URLSearchParams(window.location.search);
    for (const name of ["annotator", "token", "mode"]) {
      params.set(name, String(data.get(name) ?? ""));
    }
    window.location.search = params.toString();
  });
}

async function run(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator");
  const token = params.get("token");
  if (annotator === null || token === null) {
    connectForm();
    return;
  }
  const server = params.get("server") ?? "";
  const mode: TaskMode = params.get("mode") === "consensus"
    ? "consensus"
    : "labeling";

  const api = new ApiClient(server, token);
  const session = new UiSession(api, annotator, mode);
  const view = new AnnotationView(bindElements(document));

  const refresh = async (): Promise<void> => {
    view.render(session);
    try {
      view.renderProgress(annotator, await session.refreshProgress());
    } catch {
      // progress is cosmetic; the task flow keeps working without it
    }
  };

  document.addEventListener("keydown", (event) => {
    if (event.key === "y" || event.key === "n" || event.key === "u"
        || event.key === "Enter" || event.key === " ") {
      event.preventDefault();
      void handleKey(session, event.key).then((action) => {
        if (action === "committed") return refresh();
        view.render(session);
        return undefined;
      });
    }
  });

  try {
    await session.start();
  } catch (err) {
    session.banner = `cannot reach server: ${String(err)}`;
  }
  await refresh();
}

void run();
