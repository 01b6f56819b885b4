import { ApiClient } from './api';
import { AppController } from './app';
import { PlaybackClock } from './playback';
import { drawFrame } from './render';
import { Choice, QueryPayload, SessionInfo } from './types';

const PANE_SIZE = 360;

function byId<T extends HTMLElement>(id: string): T {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el as T;
}

const leftCanvas = byId<HTMLCanvasElement>('left-pane');
const rightCanvas = byId<HTMLCanvasElement>('right-pane');
const progressEl = byId<HTMLSpanElement>('progress');
const noticeEl = byId<HTMLDivElement>('notice');
const doneEl = byId<HTMLDivElement>('done');
const retryEl = byId<HTMLDivElement>('retry');
const speedEl = byId<HTMLSelectElement>('speed');

for (const canvas of [leftCanvas, rightCanvas]) {
    canvas.width = PANE_SIZE;
    canvas.height = PANE_SIZE;
}
const leftCtx = leftCanvas.getContext('2d')!;
const rightCtx = rightCanvas.getContext('2d')!;

let clock: PlaybackClock | null = null;
let query: QueryPayload | null = null;

const api = new ApiClient('');
const app = new AppController(api, {
    onQuery(next) {
        query = next;
        retryEl.hidden = true;
        if (next === null) {
            clock = null;
            doneEl.hidden = false;
            return;
        }
        clock = new PlaybackClock(next.left.steps.length);
        clock.setSpeed(parseFloat(speedEl.value));
        render();
    },
    onProgress(info: SessionInfo) {
        const total = info.pending + info.answered + info.skipped;
        progressEl.textContent =
            `${info.answered + info.skipped} / ${total} labeled, ` +
            `${info.pending} remaining`;
    },
    onNotice(message) {
        noticeEl.textContent = message;
        noticeEl.hidden = false;
        window.setTimeout(() => (noticeEl.hidden = true), 2500);
    },
    onRetryNeeded(message) {
        retryEl.hidden = false;
        retryEl.querySelector('span')!.textContent = message;
    },
});

function render(): void {
    if (!query || !clock || !app.maze) return;
    drawFrame(leftCtx, app.maze, query.left, clock.frame, PANE_SIZE);
    drawFrame(rightCtx, app.maze, query.right, clock.frame, PANE_SIZE);
}

let lastTime = performance.now();
function loop(now: number): void {
    if (clock && clock.tick(now - lastTime)) render();
    lastTime = now;
    requestAnimationFrame(loop);
}
requestAnimationFrame(loop);

async function submit(choice: Choice): Promise<void> {
    await app.choose(choice);
}

byId<HTMLButtonElement>('choose-left').addEventListener('click', () => void submit('left'));
byId<HTMLButtonElement>('choose-right').addEventListener('click', () => void submit('right'));
byId<HTMLButtonElement>('choose-skip').addEventListener('click', () => void submit('skip'));
byId<HTMLButtonElement>('retry-button').addEventListener('click', () => void app.retry());
byId<HTMLButtonElement>('toggle-play').addEventListener('click', () => clock?.toggle());
speedEl.addEventListener('change', () => clock?.setSpeed(parseFloat(speedEl.value)));

// keyboard shortcuts mirror the buttons
window.addEventListener('keydown', (ev) => {
    if (ev.key === 'ArrowLeft') void submit('left');
    else if (ev.key === 'ArrowRight') void submit('right');
    else if (ev.key === 's') void submit('skip');
    else if (ev.key === ' ') {
        ev.preventDefault();
        clock?.toggle();
    }
});

void app.start().catch((err) => {
    retryEl.hidden = false;
    retryEl.querySelector('span')!.textContent = `failed to load session: ${err}`;
});
