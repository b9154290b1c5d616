from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(2, 2)
qc.h(0)
qc.cx(0, 1)
qc.measure([0, 1], [0, 1])
tc = transpile(qc, backend, optimization_level=3)
tc.x(0)  # expect: op-after-transp
