import { Maze, TrajectoryPayload } from './types';

const WALL_COLOR = '#455a64';
const GOAL_COLOR = '#2e7d32';
const AGENT_COLOR = '#d32f2f';
const TRACE_COLOR = 'rgba(211, 47, 47, 0.45)';
const GOAL_RADIUS_PX = 7;
const AGENT_RADIUS_PX = 6;

/** Maze y grows upward; canvas y grows downward. */
function toCanvas(x: number, y: number, size: number): [number, number] {
    return [x * size, (1 - y) * size];
}

export function drawFrame(
    ctx: CanvasRenderingContext2D,
    maze: Maze,
    trajectory: TrajectoryPayload,
    frame: number,
    size: number,
): void {
    if (frame >= trajectory.steps.length) throw new Error('frame beyond trajectory length');
    ctx.clearRect(0, 0, size, size);

    ctx.fillStyle = '#fafafa';
    ctx.fillRect(0, 0, size, size);

    ctx.fillStyle = WALL_COLOR;
    for (const [xMin, xMax, yMin, yMax] of maze.walls) {
        const [px, py] = toCanvas(xMin, yMax, size);
        ctx.fillRect(px, py, (xMax - xMin) * size, (yMax - yMin) * size);
    }

    const [gx, gy] = toCanvas(maze.goal[0], maze.goal[1], size);
    ctx.fillStyle = GOAL_COLOR;
    ctx.beginPath();
    ctx.arc(gx, gy, GOAL_RADIUS_PX, 0, 2 * Math.PI);
    ctx.fill();

    // path trace up to the current frame
    ctx.strokeStyle = TRACE_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    for (let i = 0; i <= frame; i++) {
        const [x, y] = trajectory.steps[i][0];
        const [px, py] = toCanvas(x, y, size);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
    }
    ctx.stroke();

    const [ax, ay] = trajectory.steps[frame][0];
    const [pax, pay] = toCanvas(ax, ay, size);
    ctx.fillStyle = AGENT_COLOR;
    ctx.beginPath();
    ctx.arc(pax, pay, AGENT_RADIUS_PX, 0, 2 * Math.PI);
    ctx.fill();

    ctx.fillStyle = '#333';
    ctx.font = '12px sans-serif';
    ctx.fillText(`step ${frame + 1}/${trajectory.steps.length}`, 8, size - 8);
}
