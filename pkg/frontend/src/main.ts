/** Single-page workbench UI: retrieval explorer plus blinded rating flow. */

import { ApiError, WorkbenchClient } from './api.js';
import type { Direction } from './api.js';
import { WorkspaceState } from './state.js';
import { modelInputPreview, seedPrompt } from './templates.js';
import { asRating, CRITERIA_KEYS } from './validate.js';

export function setupApp(root: Document, client: WorkbenchClient): void {
  let state: WorkspaceState | null = null;

  const el = <T extends HTMLElement>(id: string): T => {
    const node = root.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  };

  const status = el<HTMLElement>('status');
  const show = (message: string) => {
    status.textContent = message;
  };

  el<HTMLButtonElement>('retrieve-btn').addEventListener('click', async () => {
    const seed = el<HTMLInputElement>('seed').value;
    const targetType = el<HTMLSelectElement>('target-type').value;
    const direction = el<HTMLSelectElement>('direction').value as Direction;
    const background = el<HTMLTextAreaElement>('background').value;
    el<HTMLElement>('prompt-preview').textContent = modelInputPreview(
      seedPrompt(seed, targetType, direction),
      [],
      background,
    );
    try {
      const result = await client.retrieve({
        seed,
        target_type: targetType,
        direction,
        background,
      });
      el<HTMLElement>('neighbors').textContent = JSON.stringify(
        result.neighbors,
        null,
        2,
      );
      el<HTMLElement>('model-input').textContent = result.model_input;
      show('retrieved');
    } catch (err) {
      show(err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>('session-btn').addEventListener('click', async () => {
    const raterId = el<HTMLInputElement>('rater').value;
    const ids = el<HTMLInputElement>('instance-ids').value
      .split(',')
      .map((s) => s.trim())
      .filter(Boolean);
    try {
      const session = await client.createSession([raterId, 'partner'], ids);
      state = new WorkspaceState(
        session.session_id,
        raterId,
        session.assignments[raterId] ?? [],
      );
      show(`session ${session.session_id}: ${state.assigned.length} instances assigned`);
    } catch (err) {
      show(err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>('rate-btn').addEventListener('click', async () => {
    if (!state) {
      show('create a session first');
      return;
    }
    const instanceId = el<HTMLInputElement>('rate-instance').value;
    const outputId = el<HTMLInputElement>('rate-handle').value;
    const criteria: Record<string, number> = {};
    for (const key of CRITERIA_KEYS) {
      criteria[key] = Number(el<HTMLInputElement>(`criterion-${key}`).value);
    }
    try {
      const rating = asRating({
        label: el<HTMLSelectElement>('label').value,
        criteria,
      });
      const response = await client.annotate(
        state.sessionId,
        state.raterId,
        instanceId,
        outputId,
        rating,
        `${state.sessionId}:${instanceId}:${outputId}:${Date.now()}`,
      );
      state.recordRating(instanceId, outputId, rating);
      show(`saved annotation ${response.id}; pending: ${state.pendingInstances().length}`);
    } catch (err) {
      show(err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>('close-btn').addEventListener('click', async () => {
    if (!state) {
      show('create a session first');
      return;
    }
    try {
      await client.closeSession(state.sessionId);
      const resolved = await client.resolve(state.sessionId);
      state.close(resolved.handles);
      const report = await client.agreement(state.sessionId);
      el<HTMLElement>('report').textContent = JSON.stringify(report, null, 2);
      show('session closed; model identities resolved');
    } catch (err) {
      show(err instanceof ApiError ? err.message : String(err));
    }
  });
}

if (typeof document !== 'undefined' && document.getElementById('status')) {
  setupApp(document, new WorkbenchClient(''));
}
