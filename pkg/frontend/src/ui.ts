/**
 * DOM rendering for the annotation session.
 *
 * The view is a dumb projection of UiSession state; it owns no state of
 * its own beyond the last blob URL (revoked on replacement).  Images are
 * shown at a fixed 8x nearest-neighbor upscale so 28x28 inputs are
 * legible without any zoom tooling.
 */

import type { AnnotatorProgress, ProgressPayload } from "./api.js";
import type { UiSession } from "./session.js";

export const UPSCALE = 8;

export interface ViewElements {
  image: HTMLImageElement;
  prompt: HTMLElement;
  staged: HTMLElement;
  banner: HTMLElement;
  progress: HTMLElement;
}

export class AnnotationView {
  private blobUrl: string | null = null;

  constructor(private readonly el: ViewElements) {}

  render(session: UiSession): void {
    if (session.done) {
      this.el.prompt.textContent =
        session.mode === "consensus"
          ? "All disagreements resolved. Thank you!"
          : "All images answered. Thank you!";
      this.el.image.hidden = true;
      this.el.staged.textContent = "";
    } else if (session.task !== null) {
      const label = session.task.class_label;
      this.el.prompt.textContent =
        `Is this image a valid example of class ${label}?`;
      this.el.image.hidden = false;
      if (session.imageBytes !== null) this.drawImage(session.imageBytes);
      this.el.staged.textContent =
        session.staged === null
          ? "press y or n"
          : `staged: ${session.staged} (Enter to submit, u to undo)`;
    }
    this.el.banner.textContent = session.banner ?? "";
    this.el.banner.hidden = session.banner === null;
  }

  private drawImage(bytes: ArrayBuffer): void {
    const blob = new Blob([bytes], { type: "image/png" });
    const url = URL.createObjectURL(blob);
    if (this.blobUrl !== null) URL.revokeObjectURL(this.blobUrl);
    this.blobUrl = url;
    const img = this.el.image;
    img.onload = () => {
      img.width = img.naturalWidth * UPSCALE;
      img.height = img.naturalHeight * UPSCALE;
    };
    img.src = url;
  }

  renderProgress(annotatorId: string, progress: ProgressPayload): void {
    const mine: AnnotatorProgress | undefined = progress.annotators[annotatorId];
    if (mine === undefined) {
      this.el.progress.textContent = "";
      return;
    }
    const perClass = Object.entries(mine.by_class)
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([label, c]) => `class ${label}: ${c.answered}/${c.total}`)
      .join(" | ");
    const pending = progress.consensus_pending.length;
    const tail = pending > 0 ? ` | disagreements pending: ${pending}` : "";
    this.el.progress.textContent =
      `${mine.answered}/${mine.total} answered (${perClass})${tail}`;
  }
}

/** Grab the fixed element set from the page. */
export function bindElements(root: Document | HTMLElement): ViewElements {
  const pick = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector(`#${id}`);
    if (el === null) throw new Error(`missing element #${id}`);
    return el as T;
  };
  return {
    image: pick<HTMLImageElement>("task-image"),
    prompt: pick("prompt"),
    staged: pick("staged"),
    banner: pick("banner"),
    progress: pick("progress"),
  };
}
