"""
MST-AOG - 多视角时空与或图动作识别

模块结构:
- core/: 错误、配置、数据模型、骨架归一化、数据读取与划分协议
- schemas/: 配置 / 清单 / 模型归档的 pydantic 模型
- geometry/: 缩放正交投影与 3D 偏移高斯
- features/: HOG / 光流 / HOF / 低分辨率特征与特征金字塔
- aog/: 部件 / 视角 / 姿态 / 动作节点、得分与模型归档
- inference/: 距离变换、跨视角检测、金字塔池化与动作分类
- mining/: 部件聚类与判别姿态挖掘
- learning/: 隐变量 SVM、动作 SVM 与训练流水线
- db/: 运行登记库
- streaming/: 阶段事件日志
- runner/: 阶段运行管理
- cli/: 命令行、合成数据与评估报告
"""

__version__ = '1.0.0'
